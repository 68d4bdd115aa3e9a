"""Regenerates dist_oracle.csv: CDF values at 50 probe points, 40-digit mpmath."""
from mpmath import mp, mpf, ncdf, betainc, gammainc, inf

mp.dps = 40


def t_cdf(x, df):
    x, df = mpf(x), mpf(df)
    tail = betainc(df / 2, mpf(1) / 2, 0, df / (df + x * x), regularized=True) / 2
    return 1 - tail if x > 0 else tail


def chisq_cdf(x, k):
    return gammainc(mpf(k) / 2, 0, mpf(x) / 2, regularized=True)


def f_cdf(x, d1, d2):
    x, d1, d2 = mpf(x), mpf(d1), mpf(d2)
    return betainc(d1 / 2, d2 / 2, 0, d1 * x / (d1 * x + d2), regularized=True)


probes = []
for x in [-6, -3.5, -1.96, -1, -0.25, 0, 0.3, 1, 1.645, 2.5, 4, 7.5]:
    probes.append(("normal", x, "", "", ncdf(mpf(x))))
for x, df in [(-4, 1), (-2, 2), (-1.5, 3), (-0.5, 5), (0, 7), (0.7, 10), (1.3, 15), (2.1, 20),
              (2.8, 30), (-3.1, 60), (1.96, 120), (5, 4), (-0.1, 1.5), (3.3, 8.5)]:
    probes.append(("t", x, df, "", t_cdf(x, df)))
for x, k in [(0.01, 1), (0.5, 1), (3.84, 1), (1, 2), (5.99, 2), (0.3, 3), (7.8, 3), (2, 5),
             (11.07, 5), (9, 10), (25, 10), (40, 30)]:
    probes.append(("chisq", x, k, "", chisq_cdf(x, k)))
for x, d1, d2 in [(0.1, 1, 1), (1, 1, 10), (4.96, 1, 10), (0.5, 2, 5), (3, 2, 30), (1, 3, 3),
                  (2.5, 4, 20), (0.8, 5, 50), (6, 6, 6), (1.2, 10, 100), (3.5, 2, 400), (0.05, 8, 12)]:
    probes.append(("f", x, d1, d2, f_cdf(x, d1, d2)))

assert len(probes) == 50
print("dist,x,p1,p2,cdf")
for d, x, p1, p2, v in probes:
    print(f"{d},{x},{p1},{p2},{mp.nstr(v, 25, min_fixed=-30, max_fixed=30)}")
