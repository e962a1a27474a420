import os

BASE_DIR = "/srv/users"


def load_user_file(name):
    with open(os.path.join(BASE_DIR, name)) as f:
        return f.read()
