import ctypes


def load_user_buffer(data):
    buf = ctypes.create_string_buffer(16)
    ctypes.memmove(buf, data, len(data))
    return buf.raw
