import os

import psycopg2


def load_user_connection():
    return psycopg2.connect(host="db", user="user_svc", password=os.environ["USER_DB_PASSWORD"])
