#!/usr/bin/env python3
"""Independent generator for the canonical-encoding fixture files.

Uses only hashlib and the `cryptography` Ed25519 implementation, so the
vectors do not share code with the Rust crate.
"""
import hashlib
import random
import struct
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives import serialization

HERE = Path(__file__).parent
rng = random.Random(20240601)


def h(*parts):
    return hashlib.sha256(b"".join(parts)).digest()


def header_bytes(height, prev, root, ts, nonce):
    return struct.pack(">Q", height) + prev + root + struct.pack(">Q", ts) + struct.pack(">Q", nonce)


def txid_payment(payload):
    return h(b"\x00" + struct.pack(">I", len(payload)) + payload)


def merkle_root(values):
    # Explicit full tree: pad every level to even length by duplication.
    level = [h(b"\x00" + v) for v in values]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [h(b"\x01" + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def rbytes(n):
    return bytes(rng.getrandbits(8) for _ in range(n))


def headers():
    lines = ["# height prev_hash merkle_root timestamp nonce serialized header_hash"]
    cases = [(0, bytes(32), bytes(32), 0, 0), (2**64 - 1, b"\xff" * 32, b"\xff" * 32, 2**64 - 1, 2**64 - 1)]
    for _ in range(30):
        cases.append((rng.getrandbits(64), rbytes(32), rbytes(32), rng.getrandbits(64), rng.getrandbits(64)))
    for hgt, prev, root, ts, nonce in cases:
        ser = header_bytes(hgt, prev, root, ts, nonce)
        lines.append(f"{hgt} {prev.hex()} {root.hex()} {ts} {nonce} {ser.hex()} {h(ser).hex()}")
    (HERE / "header_vectors.txt").write_text("\n".join(lines) + "\n")


def merkle():
    lines = ["# comma-separated payment payloads (hex) then merkle root"]
    for n in list(range(1, 18)) + [31, 32, 33, 100]:
        payloads = [rbytes(rng.randint(0, 40)) for _ in range(n)]
        root = merkle_root([txid_payment(p) for p in payloads])
        lines.append(",".join(p.hex() or "-" for p in payloads) + " " + root.hex())
    (HERE / "merkle_vectors.txt").write_text("\n".join(lines) + "\n")


def signing_key(seed, tsa_id):
    secret = h(b"freshproof-tsa-key", struct.pack(">Q", seed), tsa_id)
    return Ed25519PrivateKey.from_private_bytes(secret)


def pubkey(sk):
    return sk.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def tokens():
    lines = ["# backend seed tsa_id nonce header public_key token commitment"]
    for i in range(12):
        seed = rng.getrandbits(64)
        tsa_id = b"tsa-" + str(i).encode()
        sk = signing_key(seed, tsa_id)
        nonce = rbytes(16)
        header = header_bytes(rng.getrandbits(20), rbytes(32), rbytes(32), 1_700_000_000 + rng.getrandbits(20), rng.getrandbits(64))
        digest = h(nonce, header)
        time = 1_700_000_000 + rng.getrandbits(24)
        backend = ["rfc3161_style", "roughtime_style", "tls_style"][i % 3]
        if backend == "rfc3161_style":
            prefix = b"\x01" + digest + struct.pack(">Q", time) + bytes([len(tsa_id)]) + tsa_id
            sig = sk.sign(prefix)
            token = prefix + struct.pack(">H", len(sig)) + sig
        elif backend == "roughtime_style":
            root = h(b"\x00" + digest)
            sig = sk.sign(root + struct.pack(">Q", time))
            token = (b"\x02" + digest + struct.pack(">Q", time) + bytes([len(tsa_id)]) + tsa_id
                     + struct.pack(">H", len(sig)) + sig + struct.pack(">Q", 0) + b"\x00")
        else:
            t32 = struct.pack(">I", time)
            tail = h(b"tls-server-random", bytes([len(tsa_id)]), tsa_id, digest, t32)[:28]
            payload = digest + t32 + tail + b"DHPARAMS"
            sig = sk.sign(payload)
            token = (b"\x03" + digest + struct.pack(">Q", time) + bytes([len(tsa_id)]) + tsa_id
                     + struct.pack(">H", len(sig)) + sig)
        lines.append(" ".join([backend, str(seed), tsa_id.hex(), nonce.hex(), header.hex(),
                               pubkey(sk).hex(), token.hex(), h(token).hex()]))
    (HERE / "token_vectors.txt").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    headers()
    merkle()
    tokens()
