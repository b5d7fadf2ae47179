"""Boundary data of u = x1^3 on the unit disk, unit material, by computer algebra.

Builds the couple tensors from the index formulas, restricts them to the
circle x = (cos s, sin s) and differentiates along s symbolically.
Prints `s, Vhat, Mn_hat, Mnh_hat` rows used as test fixtures.
"""
import sympy as sp

x1, x2, s = sp.symbols("x1 x2 s", real=True)
mu = lam = t = l0 = l1 = l2 = sp.Integer(1)

E = mu * (2 * mu + 3 * lam) / (mu + lam)
nu = lam / (2 * (mu + lam))
B = t**3 * E / (12 * (1 - nu**2))
a0 = 2 * mu * t * l0**2
a1 = sp.Rational(2, 15) * mu * t * l1**2
a2 = mu * t * l2**2
b0 = 2 * mu * t**3 / 12 * l0**2
b1 = sp.Rational(2, 5) * mu * t**3 / 12 * l1**2

u = x1**3
X = (x1, x2)
d = lambda i, j: 1 if i == j else 0
R = range(2)


def P(a, b, g, e):
    return B * ((1 - nu) * d(a, g) * d(b, e) + nu * d(a, b) * d(g, e))


def Ph(a, b, g, e):
    return (2 * a2 + 5 * a1) * d(a, g) * d(b, e) + (-a1 - a2 + a0) * d(a, b) * d(g, e)


M = [[-sum((P(a, b, g, e) + Ph(a, b, g, e)) * sp.diff(u, X[g], X[e]) for g in R for e in R) for b in R] for a in R]


def Mbar(i, j, k):
    tr = lambda m: sum(sp.diff(u, X[q], X[q], X[m]) for q in R)
    return sp.Rational(1, 3) * (b0 - 3 * b1) * (d(i, j) * tr(k) + d(i, k) * tr(j) + d(j, k) * tr(i)) + 5 * b1 * sp.diff(u, X[i], X[j], X[k])


T = [[M[a][b] + sum(sp.diff(Mbar(a, b, g), X[g]) for g in R) for b in R] for a in R]

on = {x1: sp.cos(s), x2: sp.sin(s)}
n = (sp.cos(s), sp.sin(s))
tau = (-sp.sin(s), sp.cos(s))
n_s = [sp.diff(c, s) for c in n]
tau_s = [sp.diff(c, s) for c in tau]

q1 = sum(sp.diff(T[a][b], X[a]).subs(on) * n[b] for a in R for b in R)
q2 = sum(T[a][b].subs(on) * n[a] * tau[b] for a in R for b in R)
q3 = sum(Mbar(a, b, g).subs(on) * tau[a] * tau[b] * n[g] for a in R for b in R for g in R)
q4 = sum(Mbar(a, b, g).subs(on) * n[g] * (tau_s[a] * tau[b] - n_s[a] * n[b]) for a in R for b in R for g in R)
q5 = sum(T[a][b].subs(on) * n[a] * n[b] for a in R for b in R)
q6 = sum(Mbar(a, b, g).subs(on) * n[g] * (tau[a] * n[b] + tau[b] * n[a]) for a in R for b in R for g in R)
q7 = sum(Mbar(a, b, g).subs(on) * n[g] * n_s[a] * tau[b] for a in R for b in R for g in R)
q8 = sum(Mbar(a, b, g).subs(on) * n[a] * n[b] * n[g] for a in R for b in R for g in R)

V = sp.simplify(-(q1 + sp.diff(q2, s) + sp.diff(q3, s, 2) - sp.diff(q4, s)))
Mn = sp.simplify(q5 + sp.diff(q6, s) - q7)
Mnh = sp.simplify(-q8)
print("# V =", V)
print("# Mn =", Mn)
print("# Mnh =", Mnh)
for k in range(8):
    sv = sp.Rational(k, 8) * 2 * sp.pi
    print(", ".join(f"{float(sp.N(e.subs(s, sv), 30)):.17e}" for e in (sv, V, Mn, Mnh)))
