"""Independent reference computations for frozen test values.

Re-derives the seeded weight recipe and the toy generator from the written
contracts using plain Python floats. Run it to regenerate the constants pinned
in tests/test_golden.cpp.
"""
import hashlib
import math

M64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def hash_key(*parts):
    h = 0x6A09E667F3BCC908
    for p in parts:
        h = splitmix64(h ^ splitmix64(p & M64))
    return h


def hash_string(s):
    h = 0xCBF29CE484222325
    for c in s.encode():
        h ^= c
        h = (h * 0x100000001B3) & M64
    return h


def u01(bits):
    return (bits >> 11) * 2.0**-53


def usigned(bits):
    return 2.0 * u01(bits) - 1.0


TEXT, WEIGHTS, DECODER = 1, 2, 3


def token_vector(tok, seed, width):
    th = hash_string(tok)
    v = [usigned(hash_key(seed, TEXT, th, i)) for i in range(width)]
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def encode(text, seed, width=32):
    return [token_vector(t, seed, width) for t in text.split()]


class Factory:
    def __init__(self, seed):
        self.seed, self.next = seed, 0

    def affine(self, fan_in, fan_out):
        tid = self.next
        self.next += 1
        a = math.sqrt(3.0 / fan_in)
        w = [[a * usigned(hash_key(self.seed, WEIGHTS, tid, r * fan_out + c)) for c in range(fan_out)]
             for r in range(fan_in)]
        b = [0.1 * usigned(hash_key(self.seed, WEIGHTS, tid, fan_in * fan_out + c)) for c in range(fan_out)]
        return w, b


def apply(aff, x):
    w, b = aff
    out = []
    for row in x:
        o = list(b)
        for k, xv in enumerate(row):
            for j in range(len(o)):
                o[j] += xv * w[k][j]
        out.append(o)
    return out


def rms(x):
    out = []
    for row in x:
        ms = sum(v * v for v in row) / len(row)
        inv = 1.0 / math.sqrt(ms + 1e-6)
        out.append([v * inv for v in row])
    return out


def attend(q, k, v, heads):
    dh = len(q[0]) // heads
    out = [[0.0] * len(v[0]) for _ in q]
    for h in range(heads):
        off = h * dh
        for i, qi in enumerate(q):
            s = [sum(qi[off + c] * kj[off + c] for c in range(dh)) / math.sqrt(dh) for kj in k]
            m = max(s)
            e = [math.exp(x - m) for x in s]
            z = sum(e)
            for j, vj in enumerate(v):
                for c in range(dh):
                    out[i][off + c] += e[j] / z * vj[off + c]
    return out


def resize(grid, H, W, h, w):
    # grid[y][x] -> list of channels; half-pixel centres, clamped
    out = []
    for y in range(h):
        sy = min(max((y + 0.5) * H / h - 0.5, 0.0), H - 1)
        y0 = math.floor(sy)
        y1 = min(y0 + 1, H - 1)
        fy = sy - y0
        row = []
        for x in range(w):
            sx = min(max((x + 0.5) * W / w - 0.5, 0.0), W - 1)
            x0 = math.floor(sx)
            x1 = min(x0 + 1, W - 1)
            fx = sx - x0
            px = []
            for c in range(len(grid[0][0])):
                top = (1 - fx) * grid[y0][x0][c] + fx * grid[y0][x1][c]
                bot = (1 - fx) * grid[y1][x0][c] + fx * grid[y1][x1][c]
                px.append((1 - fy) * top + fy * bot)
            row.append(px)
        out.append(row)
    return out


def forward(seed, features, H, W, prompt, h, w, d_model=32, heads=2, blocks=2, channels=32, text=32):
    f = Factory(seed)
    inp = f.affine(channels, d_model)
    blk = []
    for _ in range(blocks):
        sa = [f.affine(d_model, d_model) for _ in range(4)]
        ca = [f.affine(d_model, d_model), f.affine(text, d_model), f.affine(text, d_model), f.affine(d_model, d_model)]
        blk.append((sa, ca, f.affine(d_model, 2 * d_model), f.affine(2 * d_model, d_model)))
    head = f.affine(d_model, channels)

    small = resize(features, H, W, h, w)
    x = apply(inp, [small[y][xx] for y in range(h) for xx in range(w)])
    half = d_model // 2
    for y in range(h):
        for xx in range(w):
            row = x[y * w + xx]
            for j in range(d_model):
                k = j if j < half else j - half
                pos = y if j < half else xx
                freq = 10000.0 ** (-(2 * (k // 2)) / half)
                row[j] += math.sin(pos * freq) if k % 2 == 0 else math.cos(pos * freq)
    for sa, ca, f1, f2 in blk:
        n = rms(x)
        o = apply(sa[3], attend(apply(sa[0], n), apply(sa[1], n), apply(sa[2], n), heads))
        x = [[a + b for a, b in zip(r, s)] for r, s in zip(x, o)]
        if prompt:
            n = rms(x)
            o = apply(ca[3], attend(apply(ca[0], n), apply(ca[1], prompt), apply(ca[2], prompt), heads))
            x = [[a + b for a, b in zip(r, s)] for r, s in zip(x, o)]
        u = apply(f1, rms(x))
        u = [[v / (1.0 + math.exp(-v)) for v in r] for r in u]
        o = apply(f2, u)
        x = [[a + b for a, b in zip(r, s)] for r, s in zip(x, o)]
    return apply(head, rms(x))


def golden_features(seed, H, W, C, scale):
    return [[[scale * usigned(hash_key(seed, y, x, c)) for c in range(C)] for x in range(W)] for y in range(H)]


def decoder_digest():
    C = 32
    a = 2.0 * math.sqrt(3.0 / C)
    seed = 11
    Wd = [[a * usigned(hash_key(seed, DECODER, r, c)) for c in range(C)] for r in range(3)]
    bd = [0.25 * usigned(hash_key(seed, DECODER, 3, r)) for r in range(3)]
    F = golden_features(5, 8, 8, C, 1.0)
    body = bytearray()
    for y in range(8):
        for x in range(8):
            for r in range(3):
                s = 0.0
                for c in range(C):
                    s += Wd[r][c] * F[y][x][c]
                s += bd[r]
                body.append(math.floor(255.0 / (1.0 + math.exp(-s)) + 0.5))
    return hashlib.sha256(b"P6\n8 8\n255\n" + bytes(body)).hexdigest(), list(body[:6])


if __name__ == "__main__":
    tv = token_vector("dog", 7, 32)
    print("token dog seed 7: [0]=%.17g [31]=%.17g" % (tv[0], tv[31]))
    print("decoder digest:", decoder_digest())
    feats = golden_features(99, 8, 8, 32, 0.5)
    logits = forward(1, feats, 8, 8, encode("a dog springing toward a frisbee", 7), 2, 2)
    flat = [v for r in logits for v in r]
    print("logits sum=%.17g sumsq=%.17g first=%.17g last=%.17g" % (sum(flat), sum(v * v for v in flat), flat[0], flat[-1]))
    un = forward(1, feats, 8, 8, [], 2, 2)
    flat = [v for r in un for v in r]
    print("uncond sum=%.17g first=%.17g" % (sum(flat), flat[0]))
