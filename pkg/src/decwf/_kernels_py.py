"""Pure-Python modular arithmetic kernels.

Reference implementations for the compiled ``_kernels`` extension. Every
function takes and returns plain Python integers.
"""


def powmod(base, exp, mod):
    return pow(base, exp, mod)


def multi_powmod(bases, exps, mod):
    acc = 1
    for b, e in zip(bases, exps):
        acc = acc * pow(b, e, mod) % mod
    return acc


def poly_eval(coeffs, x, mod):
    # Horner, highest coefficient first
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % mod
    return acc


def commit_eval(commitments, index, p, q):
    """Product of commitments[j] ** (index ** j mod q) mod p."""
    acc = 1
    e = 1
    for c in commitments:
        acc = acc * pow(c, e, p) % p
        e = e * index % q
    return acc


def lagrange_at_zero(indices, q):
    """Interpolation-at-zero coefficients for every index, in input order."""
    out = []
    for i in indices:
        num = 1
        den = 1
        for j in indices:
            if j != i:
                num = num * j % q
                den = den * (j - i) % q
        out.append(num * pow(den, -1, q) % q)
    return out
