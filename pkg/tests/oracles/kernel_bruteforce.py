import math, time, numpy as np
from scipy import integrate
import warnings; warnings.simplefilter("ignore")
t, r, lam = -3.0, 1.0, 0.5
def ivals(k):
    o = math.hypot(k, lam); lo, hi = k - o, k + o
    if k <= lam: return [(lo, hi)]
    inn = math.sqrt(k*k - lam*lam); return [(lo, k - inn), (k + inn, hi)]
def pv_near(a, b):
    # P.V. int_a^b e^{i nu t}/nu, 0 in (a,b)
    re = integrate.quad(lambda x: math.cos(x*t), a, b, weight="cauchy", wvar=0.0, epsabs=1e-14, epsrel=1e-12)[0]
    im = integrate.quad(lambda x: math.sin(x*t)/x if x != 0 else t, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return complex(re, im)
def plain(a, b):
    re = integrate.quad(lambda x: math.cos(x*t)/x, a, b, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    im = integrate.quad(lambda x: math.sin(x*t)/x, a, b, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    return complex(re, im)
def near_far(k):
    iv = ivals(k)
    if len(iv) == 1: return pv_near(*iv[0]), 0j
    return pv_near(*iv[0]), plain(*iv[1])
pref = 1.0/(4*math.pi**2*r*2j*math.pi)
t0=time.time()
# head [0, Kc]: full integrand sin(kr) e^{-ikt} J(k)
Kc = 60.0
def full(k):
    n, f = near_far(k); return math.sin(k*r)*complex(math.cos(k*t), -math.sin(k*t))*(n+f)
edges = np.concatenate([np.linspace(0, lam, 9), np.linspace(lam, lam+1, 41)[1:] , np.linspace(lam+1, Kc, 600)[1:]])
head = 0j
for a, b in zip(edges[:-1], edges[1:]):
    head += integrate.quad(lambda k: full(k).real, a, b, epsabs=1e-13, epsrel=1e-11)[0]
    head += 1j*integrate.quad(lambda k: full(k).imag, a, b, epsabs=1e-13, epsrel=1e-11)[0]
print("head", head, time.time()-t0)
# tail: sin(kr) e^{-ikt} (N + F) ; F = e^{2ikt} Ft (Ft slowly varying)
# sin(kr) e^{-ikt} N = [e^{ik(r-t)} - e^{-ik(r+t)}] N / 2i ; sin(kr) e^{ikt} Ft = [e^{ik(r+t)} - e^{-ik(r-t)}] Ft / 2i
def qawf(g, w):
    # int_Kc^inf g(k) e^{iwk} for complex slowly varying g
    if w < 0: return qawf(lambda k: g(k), -w).conjugate() if False else _qawf(g, w)
    return _qawf(g, w)
def _qawf(g, w):
    aw = abs(w); s = 1 if w > 0 else -1
    out = 0j
    for part, pick in ((lambda k: g(k).real, 1), (lambda k: g(k).imag, 1j)):
        c = integrate.quad(part, Kc, np.inf, weight="cos", wvar=aw, epsabs=1e-13, limlst=200)[0]
        sn = integrate.quad(part, Kc, np.inf, weight="sin", wvar=aw, epsabs=1e-13, limlst=200)[0]
        out += pick*(c + 1j*s*sn)
    return out
N = lambda k: near_far(k)[0]
Ft = lambda k: near_far(k)[1]*complex(math.cos(2*k*t), -math.sin(2*k*t))
tail = (qawf(N, r-t) - qawf(N, -(r+t)) + qawf(Ft, r+t) - qawf(Ft, -(r-t)))/2j
print("tail", tail, time.time()-t0)
P = pref*(head+tail)
D = 1/(4*math.pi**2*(r*r-t*t))
print(repr(P + 0.5*D))
from covband.field import bandlimited_timeordered_kernel, SpacetimeSeparation, BandRegion
v = bandlimited_timeordered_kernel(SpacetimeSeparation(t, r), BandRegion(lam)).value
print(repr(v), abs(v-(P+0.5*D))/abs(v))
