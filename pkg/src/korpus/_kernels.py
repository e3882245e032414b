"""Numba kernels for hashed character n-gram features and SGD training.

Documents arrive as one UTF-8 byte buffer plus ``offsets`` (len = n_docs + 1).
n-gram windows are counted in code points, hashed over their UTF-8 bytes.
"""

import numba as nb
import numpy as np

FNV_OFFSET = np.uint64(0xCBF29CE484222325)
FNV_PRIME = np.uint64(0x100000001B3)


@nb.njit(cache=True, nogil=True)
def _char_starts(buf, lo, hi, starts):
    # byte offset of every code point in buf[lo:hi], plus the end sentinel
    n = 0
    for i in range(lo, hi):
        if (buf[i] & 0xC0) != 0x80:
            starts[n] = i
            n += 1
    starts[n] = hi
    return n


@nb.njit(cache=True, nogil=True)
def count_ngrams(n_chars, n_min, n_max):
    total = 0
    for n in range(n_min, n_max + 1):
        if n_chars >= n:
            total += n_chars - n + 1
    return total


@nb.njit(cache=True, nogil=True)
def _emit_doc(buf, lo, hi, n_min, n_max, mask, starts, out, k):
    n_chars = _char_starts(buf, lo, hi, starts)
    for i in range(n_chars):
        h = FNV_OFFSET
        n = 0
        b = starts[i]
        while n < n_max and i + n < n_chars:
            end = starts[i + n + 1]
            while b < end:
                h ^= np.uint64(buf[b])
                h *= FNV_PRIME
                b += 1
            n += 1
            if n >= n_min:
                out[k] = np.int64(h & mask)
                k += 1
    return k


@nb.njit(cache=True, nogil=True)
def ngram_buckets(buf, offsets, n_min, n_max, mask):
    """Flat bucket indices for every document plus per-document offsets."""
    n_docs = offsets.shape[0] - 1
    doc_off = np.zeros(n_docs + 1, dtype=np.int64)
    max_len = 1
    for d in range(n_docs):
        lo, hi = offsets[d], offsets[d + 1]
        n_chars = 0
        for i in range(lo, hi):
            if (buf[i] & 0xC0) != 0x80:
                n_chars += 1
        doc_off[d + 1] = doc_off[d] + count_ngrams(n_chars, n_min, n_max)
        max_len = max(max_len, hi - lo + 1)
    out = np.empty(doc_off[n_docs], dtype=np.int64)
    starts = np.empty(max_len, dtype=np.int64)
    for d in range(n_docs):
        _emit_doc(buf, offsets[d], offsets[d + 1], n_min, n_max, mask, starts, out, doc_off[d])
    return out, doc_off


@nb.njit(cache=True, nogil=True)
def doc_vectors(buf, offsets, n_min, n_max, mask, emb):
    """Mean bucket embedding per document, without materializing indices."""
    n_docs = offsets.shape[0] - 1
    dim = emb.shape[1]
    out = np.zeros((n_docs, dim), dtype=np.float32)
    max_len = 1
    for d in range(n_docs):
        max_len = max(max_len, offsets[d + 1] - offsets[d] + 1)
    starts = np.empty(max_len, dtype=np.int64)
    acc = np.zeros(dim, dtype=np.float32)
    for d in range(n_docs):
        n_chars = _char_starts(buf, offsets[d], offsets[d + 1], starts)
        acc[:] = 0.0
        count = 0
        for i in range(n_chars):
            h = FNV_OFFSET
            n = 0
            b = starts[i]
            while n < n_max and i + n < n_chars:
                end = starts[i + n + 1]
                while b < end:
                    h ^= np.uint64(buf[b])
                    h *= FNV_PRIME
                    b += 1
                n += 1
                if n >= n_min:
                    row = np.int64(h & mask)
                    for j in range(dim):
                        acc[j] += emb[row, j]
                    count += 1
        if count > 0:
            inv = np.float32(1.0) / np.float32(count)
            for j in range(dim):
                out[d, j] = acc[j] * inv
    return out


@nb.njit(cache=True, nogil=True)
def sgd_epoch(idx, doc_off, labels, weights, order, emb, W, lr):
    """One pass of per-example SGD on softmax NLL; returns the summed loss.

    ``emb`` (buckets x dim) and ``W`` (dim x labels) are updated in place.
    """
    dim = emb.shape[1]
    n_labels = W.shape[1]
    hidden = np.empty(dim, dtype=np.float32)
    grad_h = np.empty(dim, dtype=np.float32)
    scores = np.empty(n_labels, dtype=np.float64)
    g = np.empty(n_labels, dtype=np.float32)
    lr32 = np.float32(lr)
    total = 0.0
    for t in range(order.shape[0]):
        d = order[t]
        lo, hi = doc_off[d], doc_off[d + 1]
        count = hi - lo
        hidden[:] = 0.0
        for k in range(lo, hi):
            row = idx[k]
            for j in range(dim):
                hidden[j] += emb[row, j]
        if count > 0:
            inv = np.float32(1.0) / np.float32(count)
            for j in range(dim):
                hidden[j] *= inv
        smax = -np.inf
        for c in range(n_labels):
            s = 0.0
            for j in range(dim):
                s += hidden[j] * W[j, c]
            scores[c] = s
            smax = max(smax, s)
        z = 0.0
        for c in range(n_labels):
            scores[c] = np.exp(scores[c] - smax)
            z += scores[c]
        y = labels[d]
        total += -np.log(max(scores[y] / z, 1e-300)) * weights[d]
        for c in range(n_labels):
            p = scores[c] / z
            g[c] = np.float32((p - (1.0 if c == y else 0.0)) * weights[d])
        for j in range(dim):
            s = np.float32(0.0)
            for c in range(n_labels):
                s += W[j, c] * g[c]
            grad_h[j] = s
        for j in range(dim):
            for c in range(n_labels):
                W[j, c] -= lr32 * hidden[j] * g[c]
        if count > 0:
            scale = lr32 / np.float32(count)
            for k in range(lo, hi):
                row = idx[k]
                for j in range(dim):
                    emb[row, j] -= scale * grad_h[j]
    return total
