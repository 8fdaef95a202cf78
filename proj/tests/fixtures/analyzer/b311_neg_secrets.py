import secrets

tok = secrets.token_hex(16)
