import json


def load_user_state(blob):
    return json.loads(blob.decode("utf-8"))
