# test services package
