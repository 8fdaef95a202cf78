token: str = 'ghp_abcdef'
