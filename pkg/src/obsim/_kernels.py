"""Compiled inner loops for the composite atoms (x) mode space.

Flat index of basis state |fock n> (x) |atom bitmask b> is ``n * 2**N + b``;
bit ``i`` of ``b`` set means atom ``i`` is excited.

Coefficient vector layout used throughout: ``[delta_m, delta_a, g, eta, kappa, gamma]``.
"""
import math

import numba as nb
import numpy as np

# moment columns recorded per sample
M_N, M_A, M_A2, M_ADAG_SIGMA, M_SIGMA, M_SIGMA_Z, M_TOP = range(7)
N_MOMENTS = 7

# status codes returned by the trajectory kernel
OK = 0
NORM_GROWTH = 1
DARK_JUMP = 2


@nb.njit(cache=True, nogil=True)
def popcounts(n_atoms):
    nb_ = 1 << n_atoms
    out = np.zeros(nb_, dtype=np.int64)
    for b in range(nb_):
        c = 0
        x = b
        while x:
            c += x & 1
            x >>= 1
        out[b] = c
    return out


@nb.njit(cache=True, nogil=True)
def apply_h(psi, out, n_atoms, dim_mode, coef, damped, pop):
    """out <- H psi, or H_eff psi = (H - i kappa a^+a - i gamma sum s^+s) psi if ``damped``."""
    dm, da, g, eta, kappa, gamma = coef[0], coef[1], coef[2], coef[3], coef[4], coef[5]
    if not damped:
        kappa = 0.0
        gamma = 0.0
    nb_ = 1 << n_atoms
    ieta = 1j * eta
    ig = 1j * g
    for n in range(dim_mode):
        sq_n = math.sqrt(n)
        sq_n1 = math.sqrt(n + 1)
        cn = complex(-dm * n, -kappa * n)
        base = n * nb_
        has_up = n + 1 < dim_mode
        for b in range(nb_):
            k = base + b
            pc = pop[b]
            acc = (cn + complex(-da * pc, -gamma * pc)) * psi[k]
            if n >= 1:
                acc += ieta * sq_n * psi[k - nb_]
            if has_up:
                acc -= ieta * sq_n1 * psi[k + nb_]
            if g != 0.0:
                for i in range(n_atoms):
                    bit = 1 << i
                    if b & bit:
                        # -i g sigma_i^+ a
                        if has_up:
                            acc -= ig * sq_n1 * psi[k + nb_ - bit]
                    elif n >= 1:
                        # +i g a^+ sigma_i
                        acc += ig * sq_n * psi[k - nb_ + bit]
            out[k] = acc


@nb.njit(cache=True, nogil=True)
def rk4_step(psi, h, out, k1, k2, k3, tmp, n_atoms, dim_mode, coef, pop):
    """out <- psi advanced by h under d psi/dt = -i H_eff psi (classical RK4)."""
    dim = psi.size
    mih = -1j * h
    apply_h(psi, k1, n_atoms, dim_mode, coef, True, pop)
    for k in range(dim):
        k1[k] *= mih
        tmp[k] = psi[k] + 0.5 * k1[k]
    apply_h(tmp, k2, n_atoms, dim_mode, coef, True, pop)
    for k in range(dim):
        k2[k] *= mih
        tmp[k] = psi[k] + 0.5 * k2[k]
    apply_h(tmp, k3, n_atoms, dim_mode, coef, True, pop)
    for k in range(dim):
        k3[k] *= mih
        tmp[k] = psi[k] + k3[k]
        out[k] = psi[k] + (k1[k] + 2.0 * k2[k] + 2.0 * k3[k]) / 6.0
    # reuse k1 for the fourth stage
    apply_h(tmp, k1, n_atoms, dim_mode, coef, True, pop)
    for k in range(dim):
        out[k] += mih * k1[k] / 6.0


@nb.njit(cache=True, nogil=True)
def norm2(psi):
    s = 0.0
    for k in range(psi.size):
        v = psi[k]
        s += v.real * v.real + v.imag * v.imag
    return s


@nb.njit(cache=True, nogil=True)
def moments(psi, n_atoms, dim_mode, pop, out):
    """Normalized expectations of the moment columns (see ``M_*``) into ``out``."""
    nb_ = 1 << n_atoms
    nrm = norm2(psi)
    for c in range(N_MOMENTS):
        out[c] = 0.0
    half_n = 0.5 * n_atoms
    for n in range(dim_mode):
        base = n * nb_
        sq1 = math.sqrt(n + 1)
        sq12 = math.sqrt((n + 1) * (n + 2))
        for b in range(nb_):
            k = base + b
            v = psi[k]
            cv = v.conjugate()
            p = v.real * v.real + v.imag * v.imag
            out[M_N] += n * p
            out[M_SIGMA_Z] += (pop[b] - half_n) * p
            if n + 1 < dim_mode:
                out[M_A] += cv * sq1 * psi[k + nb_]
            if n + 2 < dim_mode:
                out[M_A2] += cv * sq12 * psi[k + 2 * nb_]
            if n == dim_mode - 1:
                out[M_TOP] += p
            for i in range(n_atoms):
                bit = 1 << i
                if not (b & bit):
                    # <psi| sigma_i |psi> and <psi| a^+ sigma_i |psi>
                    out[M_SIGMA] += cv * psi[k + bit]
                    if n >= 1:
                        out[M_ADAG_SIGMA] += cv * math.sqrt(n) * psi[k - nb_ + bit]
    for c in range(N_MOMENTS):
        out[c] /= nrm


@nb.njit(cache=True, nogil=True)
def channel_rates(psi, n_atoms, dim_mode, kappa, gamma, pop, rates):
    """Unnormalized jump rates: rates[0] cavity, rates[1+i] atom i."""
    nb_ = 1 << n_atoms
    for c in range(n_atoms + 1):
        rates[c] = 0.0
    for n in range(dim_mode):
        base = n * nb_
        for b in range(nb_):
            v = psi[base + b]
            p = v.real * v.real + v.imag * v.imag
            rates[0] += 2.0 * kappa * n * p
            for i in range(n_atoms):
                if b & (1 << i):
                    rates[1 + i] += 2.0 * gamma * p


@nb.njit(cache=True, nogil=True)
def apply_jump(psi, out, channel, n_atoms, dim_mode):
    """out <- (a or sigma_{channel-1}) psi, unnormalized."""
    nb_ = 1 << n_atoms
    if channel == 0:
        for n in range(dim_mode):
            base = n * nb_
            for b in range(nb_):
                if n + 1 < dim_mode:
                    out[base + b] = math.sqrt(n + 1) * psi[base + nb_ + b]
                else:
                    out[base + b] = 0.0
    else:
        bit = 1 << (channel - 1)
        for n in range(dim_mode):
            base = n * nb_
            for b in range(nb_):
                if b & bit:
                    out[base + b] = 0.0
                else:
                    out[base + b] = psi[base + b + bit]


@nb.njit(cache=True, nogil=True)
def accumulate_rho(psi, scale, n_atoms, dim_mode, rho):
    """rho[m, n] += scale * sum_b psi(m, b) conj(psi(n, b))."""
    nb_ = 1 << n_atoms
    mat = np.ascontiguousarray(psi.reshape((dim_mode, nb_)))
    adj = np.ascontiguousarray(mat.conj().T)
    rho += scale * np.dot(mat, adj)


@nb.njit(cache=True, nogil=True)
def _grow(arr):
    new = np.empty(2 * arr.size, dtype=arr.dtype)
    new[: arr.size] = arr
    return new


@nb.njit(cache=True, nogil=True)
def run_trajectory(psi, n_atoms, dim_mode, coef, dt_max, burn_in, sample_interval,
                   n_samples, rng, samples, rho_acc, jump_counts):
    """Waiting-time Monte Carlo wave-function trajectory with periodic sampling.

    ``psi`` is used as scratch. Fills ``samples`` (n_samples x N_MOMENTS),
    adds the unnormalized sum of sampled mode density matrices into ``rho_acc``,
    and counts jumps per channel.

    Returns (status, jump_times, jump_channels, final_time, final_state).
    """
    dim = psi.size
    pop = popcounts(n_atoms)
    kappa = coef[4]
    gamma = coef[5]
    nxt = np.empty(dim, dtype=np.complex128)
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    tmp = np.empty(dim, dtype=np.complex128)
    rates = np.empty(n_atoms + 1)
    row = np.empty(N_MOMENTS, dtype=np.complex128)
    jt = np.empty(1024)
    jc = np.empty(1024, dtype=np.int64)
    n_jumps = 0

    nrm = norm2(psi)
    scale = 1.0 / math.sqrt(nrm)
    for k in range(dim):
        psi[k] *= scale
    norm_prev = 1.0
    r = 1.0 - rng.random()
    t = 0.0

    for s in range(n_samples):
        t_target = burn_in + (s + 1) * sample_interval
        while t_target - t > 1e-12 * max(1.0, t_target):
            h = min(dt_max, t_target - t)
            rk4_step(psi, h, nxt, k1, k2, k3, tmp, n_atoms, dim_mode, coef, pop)
            nn = norm2(nxt)
            if nn > norm_prev * (1.0 + 1e-8):
                return NORM_GROWTH, jt[:n_jumps], jc[:n_jumps], t, psi
            if nn > r:
                psi, nxt = nxt, psi
                norm_prev = nn
                t += h
                continue
            # the waiting-time threshold was crossed inside this step
            lo = 0.0
            hi = h
            while hi - lo > 1e-3 * h:
                mid = 0.5 * (lo + hi)
                rk4_step(psi, mid, nxt, k1, k2, k3, tmp, n_atoms, dim_mode, coef, pop)
                if norm2(nxt) > r:
                    lo = mid
                else:
                    hi = mid
            rk4_step(psi, hi, nxt, k1, k2, k3, tmp, n_atoms, dim_mode, coef, pop)
            t += hi
            channel_rates(nxt, n_atoms, dim_mode, kappa, gamma, pop, rates)
            total = 0.0
            for c in range(n_atoms + 1):
                total += rates[c]
            if total <= 0.0:
                return DARK_JUMP, jt[:n_jumps], jc[:n_jumps], t, psi
            u = rng.random() * total
            channel = n_atoms
            acc = 0.0
            for c in range(n_atoms + 1):
                acc += rates[c]
                if u < acc:
                    channel = c
                    break
            apply_jump(nxt, psi, channel, n_atoms, dim_mode)
            scale = 1.0 / math.sqrt(norm2(psi))
            for k in range(dim):
                psi[k] *= scale
            if n_jumps == jt.size:
                jt = _grow(jt)
                jc = _grow(jc)
            jt[n_jumps] = t
            jc[n_jumps] = channel
            n_jumps += 1
            jump_counts[channel] += 1
            norm_prev = 1.0
            r = 1.0 - rng.random()
        t = t_target
        moments(psi, n_atoms, dim_mode, pop, row)
        for c in range(N_MOMENTS):
            samples[s, c] = row[c]
        accumulate_rho(psi, 1.0 / norm2(psi), n_atoms, dim_mode, rho_acc)
    return OK, jt[:n_jumps], jc[:n_jumps], t, psi
