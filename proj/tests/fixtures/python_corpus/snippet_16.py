import os

BASE_DIR = "/srv/users"


def load_user_file(name):
    path = os.path.realpath(os.path.join(BASE_DIR, name))
    if not path.startswith(BASE_DIR + os.sep):
        raise PermissionError("path escapes base directory")
    with open(path) as f:
        return f.read()
