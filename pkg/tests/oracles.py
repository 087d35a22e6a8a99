"""Independent brute-force reference implementations used only in tests.

Everything here is deliberately written as plain Python loops over pairs and
subjects, with its own Kaplan-Meier product, so the vectorised library code
is checked against a genuinely separate computation path.
"""
import math

G_FLOOR = 1e-4


def km_censoring_at(times, events, t, left=False):
    """Product-limit estimate of P(censoring > t) by direct looping."""
    knots = sorted({times[i] for i in range(len(times)) if events[i] == 0})
    g = 1.0
    for tau in knots:
        if (tau > t) if not left else (tau >= t):
            break
        at_risk = sum(1 for ti in times if ti >= tau)
        censored_here = sum(1 for i in range(len(times))
                            if times[i] == tau and events[i] == 0)
        g *= 1.0 - censored_here / at_risk
    return g


def c_index_bruteforce(risks, times, events, tau):
    num = 0.0
    den = 0.0
    n = len(times)
    for i in range(n):
        if not (events[i] == 1 and times[i] <= tau):
            continue
        g = max(km_censoring_at(times, events, times[i], left=True), G_FLOOR)
        w = 1.0 / (g * g)
        for j in range(n):
            if times[j] > times[i]:
                den += w
                if risks[i] > risks[j]:
                    num += w
                elif risks[i] == risks[j]:
                    num += 0.5 * w
    if den == 0:
        raise ZeroDivisionError("no comparable pairs")
    return num / den


def brier_bruteforce(surv, times, events, tau):
    n = len(times)
    g_tau = km_censoring_at(times, events, tau)
    if g_tau <= 0:
        raise ZeroDivisionError("censoring mass exhausted")
    total = 0.0
    for i in range(n):
        if times[i] <= tau and events[i] == 1:
            g = max(km_censoring_at(times, events, times[i], left=True), G_FLOOR)
            total += surv[i] ** 2 / g
        elif times[i] > tau:
            total += (1.0 - surv[i]) ** 2 / max(g_tau, G_FLOOR)
    return total / n


def cox_newton_1d(x, times, events, iters=50):
    """Newton-Raphson for the 1-covariate Cox partial likelihood."""
    order = sorted(range(len(times)), key=lambda i: times[i])
    beta = 0.0
    for _ in range(iters):
        grad = 0.0
        hess = 0.0
        for i in order:
            if events[i] != 1:
                continue
            num1 = num2 = den = 0.0
            for k in range(len(times)):
                if times[k] >= times[i]:
                    w = math.exp(beta * x[k])
                    den += w
                    num1 += w * x[k]
                    num2 += w * x[k] * x[k]
            mean = num1 / den
            grad += x[i] - mean
            hess -= num2 / den - mean * mean
        step = grad / hess
        beta -= step
        if abs(step) < 1e-12:
            break
    return beta
