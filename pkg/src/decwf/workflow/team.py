"""Team acceptance of offers through threshold signatures.

Each member of a team role signs ``(item_id, "accept")`` with its share of
the role's dealing. ``k`` valid shares combine into a composite signature,
which is kept as the record of who accepted together. Weighted policies work
unchanged: a member with weight ``w`` holds ``w`` shares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from decwf.crypto_core import GroupParams
from decwf.errors import InsufficientShares
from decwf.secret_sharing import SharingPolicy
from decwf.threshold_sig import CompositeSignature, ts_combine, ts_deal, ts_sign_share, ts_verify, ts_verify_share
from decwf.workflow.model import WorkItem


def acceptance_message(item_id: str) -> bytes:
    return f"decwf/team|{item_id}|accept".encode()


@dataclass
class TeamKeys:
    role: str
    vks: object
    keys: dict  # member -> [SigningKeyShare]

    @property
    def holder(self) -> str:
        return f"team:{self.role}"


def team_setup(role: str, members, k: int, params: GroupParams, seed=0, weights: dict | None = None) -> TeamKeys:
    members = list(members)
    if weights is None:
        policy = SharingPolicy(k, len(members))
        owner_of = {i + 1: m for i, m in enumerate(members)}
    else:
        policy = SharingPolicy(k, sum(weights[m] for m in members), {m: weights[m] for m in members})
        owner_of = None
    policy.validate(params)
    vks, shares = ts_deal(policy, params, seed=f"{seed}|team|{role}")
    keys = {m: [] for m in members}
    for s in shares:
        who = owner_of[s.index] if owner_of else s.participant
        keys[who].append(s)
    return TeamKeys(role, vks, keys)


def team_accept_shares(item_id: str, member: str, team: TeamKeys) -> list:
    msg = acceptance_message(item_id)
    return [ts_sign_share(msg, k, team.vks) for k in team.keys.get(member, [])]


@dataclass
class TeamAllocation:
    item_id: str
    holder: str
    composite: CompositeSignature

    def verify(self, vks) -> bool:
        return ts_verify(acceptance_message(self.item_id), self.composite, vks)


@dataclass
class TeamOffer:
    """Acceptances gathered for one offered item until allocation or expiry."""

    item: WorkItem
    team: TeamKeys
    expires_at: int
    shares: dict = field(default_factory=dict)  # index -> share
    who: dict = field(default_factory=dict)  # index -> member

    def add(self, member: str, share) -> bool:
        if not ts_verify_share(acceptance_message(self.item.item_id), share, self.team.vks):
            return False
        self.shares.setdefault(share.index, share)
        self.who.setdefault(share.index, member)
        return True

    def try_allocate(self) -> TeamAllocation | None:
        if self.item.state != "offered" or len(self.shares) < self.team.vks.threshold:
            return None
        comp = ts_combine(acceptance_message(self.item.item_id), list(self.shares.values()), self.team.vks)
        self.item.transition("allocated", holder=self.team.holder)
        return TeamAllocation(self.item.item_id, self.team.holder, comp)

    def expire(self, now: int) -> bool:
        if self.item.state == "offered" and now >= self.expires_at:
            self.item.transition("withdrawn")
            return True
        return False

    def performer(self, alloc: TeamAllocation) -> str:
        """The contributor that carries out the work for the team."""
        return self.who[alloc.composite.indices[0]]


def wf_team_accept(item: WorkItem, acceptances, team: TeamKeys, now: int = 0, expires_at: int | None = None):
    """Allocate ``item`` to the team if the acceptances reach the threshold.

    Returns the allocation, or None. An offer past ``expires_at`` without
    enough acceptances is withdrawn.
    """
    offer = TeamOffer(item, team, expires_at if expires_at is not None else now + 1)
    for member, share in acceptances:
        offer.add(member, share)
    try:
        alloc = offer.try_allocate()
    except InsufficientShares:
        alloc = None
    if alloc is None and expires_at is not None:
        offer.expire(now)
    return alloc
