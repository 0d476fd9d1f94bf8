"""High-precision reference values for the information-measure unit tests."""
from mpmath import mp, mpf, log, sqrt

mp.dps = 40


def h2(p):
    p = mpf(p)
    return -(p * log(p, 2) + (1 - p) * log(1 - p, 2))


print("H(Bern(0.25))          ", h2("0.25"))
print("H_1/2(Bern(0.25))      ", 2 * log(sqrt(mpf("0.25")) + sqrt(mpf("0.75")), 2))
print("D(Bern.5||Bern.25)     ", mpf("0.5") * log(2, 2) + mpf("0.5") * log(mpf("0.5") / mpf("0.75"), 2))
print("1-h2(0.11)             ", 1 - h2("0.11"))
print("h2(.25)-h2(.1)         ", h2("0.25") - h2("0.1"))
s = sqrt(mpf("0.5")) + 2 * sqrt(mpf("0.25"))
print("(sum sqrt p)^2 (.5,.25,.25)", s ** 2)
print("arikan lower (.5,.25,.25) rho=1", s ** 2 / (1 + log(3, 2)))
print("1 - log2(ln2 + 1.5)    ", 1 - log(log(2) + mpf("1.5"), 2))
