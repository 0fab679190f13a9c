# Makes qbm_lab.py and qbm_modules importable from the tests
