"""Data elements in flight: the four transfer modes and sealed routing."""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass

from decwf.errors import IntegrityError, NotPresent, ProtocolError
from decwf.group_key import SessionKey, payload_open, payload_seal
from decwf.mutex import MemberCore, MutexLayout


def _aad(element: str, dst: str) -> bytes:
    return f"decwf/data|{element}|{dst}".encode()


def seal_element(key: SessionKey, element: str, dst: str, value: bytes, nonce: bytes | None = None) -> bytes:
    return payload_seal(key, value, _aad(element, dst), nonce)


def open_element(key: SessionKey, element: str, dst: str, blob: bytes) -> bytes:
    return payload_open(key, blob, _aad(element, dst))


class LocalMutex:
    """The mutex cores driven in-process, one group, instant delivery."""

    def __init__(self, mutex_id: str, owner: str):
        self.mutex_id = mutex_id
        self.layout = MutexLayout(mutex_id, {owner: [owner]}, token_at=owner, batch=1_000_000)
        self.leader = self.layout.make_leader(owner)
        self.members = {}
        self.holder = None

    def _member(self, who):
        if who not in self.members:
            self.members[who] = MemberCore(who, self.leader.name, self.mutex_id)
        return self.members[who]

    def _pump(self, out) -> None:
        todo = deque(out)
        while todo:
            dst, msg = todo.popleft()
            if msg["t"] == "GRANT":
                m = self.members[dst]
                m.on_grant(msg)
                self.holder = m.name
            else:
                todo.extend(self.leader.on_message(msg.get("from"), msg))

    def acquire(self, who: str) -> bool:
        """Request the lock; True if granted now, else queued."""
        m = self._member(who)
        if m.state != "idle":
            return m.state == "holding"
        self._pump(m.request())
        return m.state == "holding"

    def release(self, who: str) -> None:
        m = self.members.get(who)
        if m is None or m.state != "holding":
            raise ProtocolError(f"{who} does not hold {self.mutex_id}")
        self.holder = None
        self._pump(m.release())

    def holds(self, who: str) -> bool:
        m = self.members.get(who)
        return m is not None and m.state == "holding"


@dataclass
class Reference:
    locator: str
    locked: bool = False


class DataRegistry:
    """Where by-reference values live; locked ones sit behind a mutex."""

    def __init__(self):
        self._values = {}
        self._locks = {}

    def publish(self, owner: str, element: str, value: bytes, locked: bool = False) -> Reference:
        locator = f"ref:{owner}:{element}:{hashlib.sha256(value).hexdigest()[:12]}"
        self._values[locator] = bytes(value)
        if locked and locator not in self._locks:
            self._locks[locator] = LocalMutex(locator, owner)
        return Reference(locator, locked)

    def lock(self, locator: str) -> LocalMutex:
        return self._locks[locator]

    def read(self, ref: Reference, who: str) -> bytes:
        if ref.locked and not self._locks[ref.locator].holds(who):
            raise ProtocolError(f"{who} must hold the lock on {ref.locator}")
        return self._values[ref.locator]

    def write(self, ref: Reference, who: str, value: bytes) -> None:
        if ref.locked and not self._locks[ref.locator].holds(who):
            raise ProtocolError(f"{who} must hold the lock on {ref.locator}")
        self._values[ref.locator] = bytes(value)


class DataStore:
    """Elements held by one task performer."""

    def __init__(self, owner: str, registry: DataRegistry | None = None):
        self.owner = owner
        self.registry = registry if registry is not None else DataRegistry()
        self._items = {}  # element -> bytes or Reference

    def put(self, element: str, value) -> None:
        self._items[element] = value

    def has(self, element: str) -> bool:
        return element in self._items

    def take(self, element: str):
        try:
            return self._items.pop(element)
        except KeyError:
            raise NotPresent(f"{self.owner} no longer holds {element}") from None

    def raw(self, element: str):
        try:
            return self._items[element]
        except KeyError:
            raise NotPresent(f"{self.owner} does not hold {element}") from None

    def read(self, element: str) -> bytes:
        v = self.raw(element)
        if isinstance(v, Reference):
            return self.registry.read(v, self.owner)
        return v

    def acquire(self, element: str) -> bool:
        v = self.raw(element)
        if not isinstance(v, Reference) or not v.locked:
            return True
        return self.registry.lock(v.locator).acquire(self.owner)

    def release(self, element: str) -> None:
        v = self.raw(element)
        if isinstance(v, Reference) and v.locked:
            self.registry.lock(v.locator).release(self.owner)


def wf_transfer(element, src: DataStore, dst: DataStore, route=(), src_key=None, dst_key=None, tamper=None, trace=None):
    """Move ``element`` from ``src`` to ``dst`` through the ``route`` hops.

    Sensitive elements are sealed under the scope key (``src_key`` at the
    source, ``dst_key`` at the destination) so the intermediaries only carry
    ciphertext. ``tamper(hop, blob) -> blob`` lets a test play a dishonest
    intermediary. Returns what ``dst`` now holds.
    """
    name = element.name
    mode = element.transfer
    if mode == "copy":
        payload = src.read(name)
    elif mode == "move":
        payload = src.take(name)
        if isinstance(payload, Reference):
            payload = src.registry.read(payload, src.owner)
    elif mode in ("ref", "ref-locked"):
        cur = src.raw(name)
        ref = cur if isinstance(cur, Reference) else src.registry.publish(src.owner, name, cur, mode == "ref-locked")
        src.put(name, ref)
        payload = ref.locator.encode()
    else:
        raise ProtocolError(f"unknown transfer mode {mode}")
    wire = payload
    if element.sensitive:
        if src_key is None:
            raise PermissionError(f"{src.owner} holds no scope key for {name}")
        wire = seal_element(src_key, name, dst.owner, payload)
    for hop in route:
        if tamper is not None:
            wire = tamper(hop, wire)
    if element.sensitive:
        if dst_key is None:
            if trace:
                trace(dst.owner, name, False)
            raise PermissionError(f"{dst.owner} holds no scope key for {name}")
        try:
            payload = open_element(dst_key, name, dst.owner, wire)
        except IntegrityError:
            if trace:
                trace(dst.owner, name, False)
            raise
        if trace:
            trace(dst.owner, name, True)
    else:
        payload = wire  # plain data carries no integrity protection
    if mode in ("ref", "ref-locked"):
        value = Reference(payload.decode(), mode == "ref-locked")
    else:
        value = payload
    dst.put(name, value)
    return value
