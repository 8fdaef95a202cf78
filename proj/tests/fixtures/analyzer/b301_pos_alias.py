import pickle as pk

obj = pk.load(open('state.pkl', 'rb'))
