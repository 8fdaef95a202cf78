import tempfile

fd, path = tempfile.mkstemp()
