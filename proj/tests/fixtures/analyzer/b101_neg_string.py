doc = 'assert x is documented here'
print(doc)
