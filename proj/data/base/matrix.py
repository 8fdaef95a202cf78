def zeros(rows, cols):
    return [[0] * cols for _ in range(rows)]


def identity(n):
    m = zeros(n, n)
    for i in range(n):
        m[i][i] = 1
    return m


def multiply(a, b):
    if len(a[0]) != len(b):
        raise ValueError("shape mismatch")
    out = zeros(len(a), len(b[0]))
    for i, row in enumerate(a):
        for j in range(len(b[0])):
            out[i][j] = sum(row[k] * b[k][j] for k in range(len(b)))
    return out


def transpose(m):
    return [list(col) for col in zip(*m)]


def trace(m):
    return sum(m[i][i] for i in range(len(m)))
