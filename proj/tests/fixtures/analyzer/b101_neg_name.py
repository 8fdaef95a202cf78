def assert_positive(x):
    if x <= 0:
        raise ValueError(x)
