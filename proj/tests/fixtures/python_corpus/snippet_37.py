import requests


def load_user_preview(url):
    return requests.get(url, timeout=5).text
