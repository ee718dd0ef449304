# test routes package
