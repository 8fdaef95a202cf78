"""Small inventory bookkeeping module."""

import json
from dataclasses import dataclass, field


@dataclass
class Item:
    sku: str
    quantity: int = 0
    tags: list = field(default_factory=list)


class Inventory:
    def __init__(self):
        self.items = {}

    def add(self, sku, quantity=1):
        item = self.items.setdefault(sku, Item(sku))
        item.quantity += quantity
        return item.quantity

    def remove(self, sku, quantity=1):
        item = self.items.get(sku)
        if item is None:
            raise KeyError(sku)
        elif item.quantity < quantity:
            raise ValueError("insufficient stock")
        else:
            item.quantity -= quantity
        return item.quantity

    def to_json(self):
        return json.dumps({k: v.quantity for k, v in self.items.items()}, sort_keys=True)


def load(text):
    inv = Inventory()
    for sku, qty in json.loads(text).items():
        inv.add(sku, qty)
    return inv
