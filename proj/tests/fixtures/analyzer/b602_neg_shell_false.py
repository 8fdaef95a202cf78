import subprocess

subprocess.call('ls', shell=False)
