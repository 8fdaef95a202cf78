def q(uid):
    return 'SELECT * FROM users WHERE id = %s' % uid
