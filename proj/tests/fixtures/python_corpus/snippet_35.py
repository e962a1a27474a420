import psycopg2


def load_user_connection():
    return psycopg2.connect(host="db", user="user_svc", password="Sup3rS3cret!")
