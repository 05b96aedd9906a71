"""Decentralised workflow enactment over threshold-cryptographic group protocols.

Subpackages and modules:

* ``crypto_core``, ``secret_sharing``, ``threshold_sig``, ``coin_toss``:
  prime-order group arithmetic, verifiable sharing, threshold signatures
  and the common coin.
* ``agreement``: asynchronous binary agreement and the notice board.
* ``group_key``, ``anon_channel``, ``mutex``: group services.
* ``simnet``: the deterministic discrete-event simulator and trace checker.
* ``workflow``: process definitions, the distributed engine and the Petri
  net reference.
* ``scenario``, ``ceremony``, ``cli``: the ``decwf`` command line.
"""

__version__ = "0.1.0"
