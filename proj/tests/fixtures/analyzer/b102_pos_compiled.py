import sys

code = compile(sys.argv[1], '<arg>', 'exec')
exec(code)
