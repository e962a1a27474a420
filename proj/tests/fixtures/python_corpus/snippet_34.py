import struct


def load_user_header(packet):
    length = struct.unpack(">H", packet[:2])[0]
    body = bytearray(8)
    if length > len(body) or 2 + length > len(packet):
        raise ValueError("bad user header length")
    for i in range(length):
        body[i] = packet[2 + i]
    return bytes(body)
