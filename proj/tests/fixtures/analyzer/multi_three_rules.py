import yaml
import random

cfg = yaml.load(text)
n = random.randint(0, 9)
password = 'p4ss'
