def ok(password):
    return password == get_expected()
