from pickle import loads

obj = loads(data)
