"""Byzantine agreement and the notice board built on it."""

from decwf.agreement.aba import ABSTAIN, AbaInstance, AbaKeys, aba_setup, vote_message
from decwf.agreement.host import AbaHost, AbaNode
from decwf.agreement.noticeboard import NoticeBoard, NoticeBoardNode, NoticeEntry, nb_publish, nb_retrieve


def aba_init(instance_id, value, keys: AbaKeys):
    """Create an instance and return it with its first outbound messages."""
    inst = AbaInstance(instance_id, keys)
    return inst, inst.start(value)


def aba_handle(instance: AbaInstance, sender_index, msg):
    return instance, instance.handle(sender_index, msg)


__all__ = [
    "ABSTAIN",
    "AbaInstance",
    "AbaKeys",
    "aba_setup",
    "aba_init",
    "aba_handle",
    "vote_message",
    "AbaHost",
    "AbaNode",
    "NoticeBoard",
    "NoticeBoardNode",
    "NoticeEntry",
    "nb_publish",
    "nb_retrieve",
]
