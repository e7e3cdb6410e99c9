"""Conditional Hessian covariance by direct Schur complement.

Differentiates C(s, t) = r(|s - t|^2) symbolically, builds the joint covariance of
(grad X(0), grad X(t), Hessian X(0), Hessian X(t)) with t = rho e_1, and conditions on
the gradients. Values printed here are frozen in test_correlations.cpp.

    python3 tests/oracles/conditional_covariance.py
"""
import sympy as sp

DIGITS = 30


def conditional_law(rexpr, x, N, rho):
    s = sp.symbols(f"s1:{N + 1}")
    t = sp.symbols(f"t1:{N + 1}")
    kernel = rexpr.subs(x, sum((s[i] - t[i]) ** 2 for i in range(N)))

    def cov(a, b):
        e = kernel
        for c in a[1]:
            e = sp.diff(e, s[c])
        for c in b[1]:
            e = sp.diff(e, t[c])
        sv = {si: (rho if i == 0 and a[0] == 1 else 0) for i, si in enumerate(s)}
        tv = {ti: (rho if i == 0 and b[0] == 1 else 0) for i, ti in enumerate(t)}
        return sp.N(e.subs({**sv, **tv}), DIGITS + 10)

    grad = [(p, (i,)) for p in (0, 1) for i in range(N)]
    pairs = [(i, j) for i in range(N) for j in range(i, N)]
    hess = [(p, h) for p in (0, 1) for h in pairs]
    G = sp.Matrix(len(grad), len(grad), lambda i, j: cov(grad[i], grad[j]))
    HG = sp.Matrix(len(hess), len(grad), lambda i, j: cov(hess[i], grad[j]))
    HH = sp.Matrix(len(hess), len(hess), lambda i, j: cov(hess[i], hess[j]))
    cond = HH - HG * G.inv() * HG.T
    index = {h: n for n, h in enumerate(hess)}
    return G, cond, index


def report(label, rexpr, x, N, rho):
    G, cond, idx = conditional_law(rexpr, x, N, rho)
    print(f"# {label}, N={N}, rho={rho}")
    print("gradient_det", sp.N(G.det(), DIGITS))
    for i in range(N):
        for j in range(N):
            a, b = idx[(0, (i, i))], idx[(0, (j, j))]
            c = idx[(1, (j, j))]
            print(f"gamma1[{i}][{j}]", sp.N(cond[a, b], DIGITS),
                  f"gamma3[{i}][{j}]", sp.N(cond[a, c], DIGITS))
    for i in range(N):
        for j in range(i + 1, N):
            a, c = idx[(0, (i, j))], idx[(1, (i, j))]
            print(f"offdiag({i},{j}) var", sp.N(cond[a, a], DIGITS), "cross", sp.N(cond[a, c], DIGITS))
    stray = 0
    for (p, h), n in idx.items():
        for (q, g), m in idx.items():
            diag_h, diag_g = h[0] == h[1], g[0] == g[1]
            if not (diag_h and diag_g) and h != g:
                stray = max(stray, abs(cond[n, m]))
    print("max declared-zero entry", sp.N(stray, 5))


if __name__ == "__main__":
    x = sp.Symbol("x")
    report("mixture r=(exp(-x)+exp(-3x))/2", (sp.exp(-x) + sp.exp(-3 * x)) / 2, x, 3,
           sp.Rational(1, 2))
    report("gaussian r=exp(-x)", sp.exp(-x), x, 2, sp.Rational(3, 10))
