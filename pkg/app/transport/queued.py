"""
Queued ("switchless-style") calls into the TEE simulation.

The requester owns a ring of fixed-size slots in shared memory. A persistent
poller thread inside the worker picks up submitted slots, runs them through
the same dispatch as socket calls (minus the modeled transition cost) and
marks them completed; the requester spins on its slot. Slot contents are
sealed with a key handed out over the attested channel.

Slot layout: u8 state | 3 pad | u32 length | u64 request_id | data.
"""
from __future__ import annotations

import logging
import struct
import threading
import time
from multiprocessing import resource_tracker, shared_memory

from app.errors import QueueSaturated, TransportFailure
from .attestation import SessionCipher
from .channel import Channel
from .wire import MessageType, WireMessage, decode_body, encode_body

logger = logging.getLogger(__name__)

EMPTY, CLAIMED, SUBMITTED, COMPLETED = 0, 1, 2, 3
SLOT_HEADER = struct.Struct(">BxxxIQ")
DEFAULT_SLOT_SIZE = 64 * 1024
_IDLE_SPINS = 2000


class SlotRing:
    def __init__(self, depth: int, slot_size: int = DEFAULT_SLOT_SIZE, name: str | None = None):
        self.depth = depth
        self.slot_size = slot_size
        self.stride = SLOT_HEADER.size + slot_size
        self.owner = name is None
        if self.owner:
            self.shm = shared_memory.SharedMemory(create=True, size=max(1, depth * self.stride))
        else:
            self.shm = shared_memory.SharedMemory(name=name)
            try:
                # The creating process unlinks; the attaching side must not.
                resource_tracker.unregister(self.shm._name, "shared_memory")
            except Exception:
                pass
        self.buf = self.shm.buf
        if self.owner:
            self.buf[:] = bytes(len(self.buf))

    @property
    def name(self) -> str:
        return self.shm.name

    def offset(self, slot: int) -> int:
        return slot * self.stride

    def state(self, slot: int) -> int:
        return self.buf[self.offset(slot)]

    def set_state(self, slot: int, state: int):
        self.buf[self.offset(slot)] = state

    def write(self, slot: int, request_id: int, data: bytes, state: int):
        if len(data) > self.slot_size:
            raise QueueSaturated(f"{len(data)} bytes do not fit a {self.slot_size}-byte slot")
        start = self.offset(slot)
        self.buf[start + SLOT_HEADER.size:start + SLOT_HEADER.size + len(data)] = data
        SLOT_HEADER.pack_into(self.buf, start, CLAIMED, len(data), request_id)
        # The state byte goes last so the reader never sees a half-written slot.
        self.buf[start] = state

    def read(self, slot: int) -> tuple:
        start = self.offset(slot)
        _, length, request_id = SLOT_HEADER.unpack_from(self.buf, start)
        data = bytes(self.buf[start + SLOT_HEADER.size:start + SLOT_HEADER.size + length])
        return request_id, data

    def scrub(self, slot: int):
        start = self.offset(slot)
        self.buf[start + 1:start + self.stride] = bytes(self.stride - 1)

    def close(self):
        self.buf = None
        try:
            self.shm.close()
        except BufferError:
            pass
        if self.owner:
            try:
                self.shm.unlink()
            except FileNotFoundError:
                pass


class QueuedChannel(Channel):
    """Queued calls over a ring, falling back to the synchronous channel when no slot is free."""

    def __init__(self, channel, depth: int, slot_size: int = DEFAULT_SLOT_SIZE, timeout: float = 5.0):
        super().__init__()
        self.channel = channel
        self.timeout = timeout
        self.fallbacks = 0
        self.ring = None
        self._cipher = None
        self._claim_lock = threading.Lock()
        self._abandoned: set = set()
        self._warned = False
        if depth > 0:
            ring = SlotRing(depth, slot_size)
            try:
                key = channel.call(MessageType.QUEUE_ATTACH, [ring.name, depth, slot_size])
                self._cipher = SessionCipher(bytes(key))
            except Exception:
                ring.close()
                raise
            self.ring = ring
            logger.info("Attached %d-slot call queue %s", depth, ring.name)

    def next_id(self) -> int:
        return self.channel.next_id()

    def request(self, msg: WireMessage) -> WireMessage:
        try:
            return self._queued(msg)
        except QueueSaturated as e:
            self.fallbacks += 1
            if not self._warned:
                logger.warning("Call queue saturated, falling back to synchronous calls: %s", e)
                self._warned = True
            return self.channel.request(msg)

    def pipeline(self, messages) -> list:
        return [self.request(msg) for msg in messages]

    def _claim(self) -> int:
        if self.ring is None:
            raise QueueSaturated("Queue depth is 0")
        with self._claim_lock:
            self._reclaim()
            for slot in range(self.ring.depth):
                if self.ring.state(slot) == EMPTY:
                    self.ring.set_state(slot, CLAIMED)
                    return slot
        raise QueueSaturated("No free slot")

    def _reclaim(self):
        """Return slots of timed-out calls to the ring once the worker has completed them."""
        for slot in [s for s in self._abandoned if self.ring.state(s) == COMPLETED]:
            self.ring.scrub(slot)
            self.ring.set_state(slot, EMPTY)
            self._abandoned.discard(slot)
            logger.debug("Reclaimed slot %d of a timed-out call", slot)

    def _queued(self, msg: WireMessage) -> WireMessage:
        sealed = self._cipher.seal(encode_body(msg)) if self.ring is not None else b""
        slot = self._claim()
        ring = self.ring
        try:
            ring.write(slot, msg.request_id, sealed, SUBMITTED)
        except QueueSaturated:
            ring.set_state(slot, EMPTY)
            raise
        deadline = time.monotonic() + self.timeout
        spins = 0
        buf, start = ring.buf, ring.offset(slot)
        while buf[start] != COMPLETED:
            spins += 1
            if spins % 4096 == 0:
                if time.monotonic() > deadline:
                    # The worker may still write the slot; it is reclaimed once completed.
                    with self._claim_lock:
                        self._abandoned.add(slot)
                    raise TransportFailure(f"Queued call {msg.request_id} timed out")
                time.sleep(0)
        request_id, data = ring.read(slot)
        ring.scrub(slot)
        ring.set_state(slot, EMPTY)
        response = decode_body(self._cipher.open(data))
        if request_id != msg.request_id or response.request_id != msg.request_id:
            raise TransportFailure(f"Queued response {response.request_id} does not match {msg.request_id}")
        return response

    def close(self):
        if self.ring is not None:
            self.ring.close()
            self.ring = None
        self.channel.close()


class RingPoller(threading.Thread):
    """Worker-side loop serving one requester's ring."""

    def __init__(self, ring: SlotRing, cipher, dispatch):
        super().__init__(name=f"ring-poller-{ring.name}", daemon=True)
        self.ring = ring
        self.cipher = cipher
        self.dispatch = dispatch
        self.completed = 0
        self._stop_event = threading.Event()

    def stop(self):
        self._stop_event.set()

    def run(self):
        ring = self.ring
        idle = 0
        while not self._stop_event.is_set():
            busy = False
            for slot in range(ring.depth):
                if ring.state(slot) != SUBMITTED:
                    continue
                busy = True
                request_id, data = ring.read(slot)
                private = bytearray(self.cipher.open(data))
                try:
                    response = self.dispatch(decode_body(private))
                finally:
                    private[:] = bytes(len(private))
                try:
                    ring.write(slot, request_id, self.cipher.seal(encode_body(response)), COMPLETED)
                except QueueSaturated as e:
                    error = WireMessage(MessageType.ERROR, request_id, [e.code, str(e)])
                    ring.write(slot, request_id, self.cipher.seal(encode_body(error)), COMPLETED)
                self.completed += 1
            if busy:
                idle = 0
                continue
            idle += 1
            if idle > _IDLE_SPINS:
                time.sleep(0.00005)
            elif idle % 64 == 0:
                time.sleep(0)
        ring.close()
