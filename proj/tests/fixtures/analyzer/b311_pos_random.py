import random

x = random.random()
