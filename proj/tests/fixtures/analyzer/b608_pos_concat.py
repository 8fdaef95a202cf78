query = 'SELECT name FROM t WHERE id = ' + uid
