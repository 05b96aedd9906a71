"""Key ceremony: deal shares to parties and write them out.

Each party gets ``share-<name>.json`` with its share indices and values (as
decimal strings), the group parameters and the dealing commitments. The
public document ``public.json`` holds the dealing commitments and
verification keys. The group secret never leaves ``ts_deal`` and is never
written.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from decwf.crypto_core import HASH_ID, PROFILES
from decwf.errors import PolicyError
from decwf.secret_sharing import Dealing, Share, SharingPolicy
from decwf.threshold_sig import VerificationKeySet, ts_deal

PUBLIC_FILE = "public.json"


@dataclass
class CeremonyOutput:
    directory: Path
    share_files: list
    public_file: Path
    vks: VerificationKeySet


def default_names(n: int) -> list:
    return [f"p{i}" for i in range(1, n + 1)]


def ceremony(parties: int, threshold: int, weights=None, profile: str = "toy", out_dir=".", names=None, seed=None) -> CeremonyOutput:
    """Deal a (threshold, total weight) policy and write the files.

    ``weights`` is a list aligned with ``names`` (one share each when
    omitted). Validation happens before anything touches the disk.
    """
    if profile not in PROFILES:
        raise PolicyError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    params = PROFILES[profile]
    names = list(names) if names else default_names(parties)
    if len(names) != parties or len(set(names)) != parties:
        raise PolicyError("need one distinct name per party")
    if weights is None:
        policy = SharingPolicy(threshold, parties)
        owner = dict(zip(range(1, parties + 1), names))
    else:
        if len(weights) != parties:
            raise PolicyError("need one weight per party")
        policy = SharingPolicy(threshold, sum(weights), dict(zip(names, weights)))
        owner = None
    policy.validate(params)
    vks, keys = ts_deal(policy, params, seed=seed)
    held = {n: [] for n in names}
    for k in keys:
        held[owner[k.index] if owner else k.participant].append(k.share)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name in names:
        mine = sorted(held[name], key=lambda s: s.index)
        doc = {
            "participant": name,
            "dealing_id": vks.dealing_id,
            "indices": [s.index for s in mine],
            "values": [str(s.value) for s in mine],
            "params": params.to_doc(),
            "hash": HASH_ID,
            "commitments": [str(c) for c in vks.commitments],
        }
        path = out / f"share-{name}.json"
        _write_private(path, doc)
        files.append(path)
    public = out / PUBLIC_FILE
    pub_doc = {
        "profile": profile,
        "hash": HASH_ID,
        "participants": names,
        "allocation": {n: sorted(s.index for s in held[n]) for n in names},
        "vks": vks.to_doc(),
    }
    public.write_text(json.dumps(pub_doc, indent=2, sort_keys=True) + "\n")
    return CeremonyOutput(out, files, public, vks)


def _write_private(path: Path, doc: dict) -> None:
    data = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w") as f:
        f.write(data)


def load_public(directory) -> VerificationKeySet:
    doc = json.loads((Path(directory) / PUBLIC_FILE).read_text())
    return VerificationKeySet.from_doc(doc["vks"])


def load_shares(path) -> tuple:
    """Returns (participant, [Share])."""
    doc = json.loads(Path(path).read_text())
    shares = [Share(int(i), int(v), doc["dealing_id"]) for i, v in zip(doc["indices"], doc["values"])]
    return doc["participant"], shares


def load_dealing(directory) -> Dealing:
    vks = load_public(directory)
    return Dealing(vks.policy, vks.params, vks.commitments, vks.dealing_id)
