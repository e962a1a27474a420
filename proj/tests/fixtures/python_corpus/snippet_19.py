import os

UPLOAD_DIR = "/var/www/users"


def save_user_upload(upload):
    upload.save(os.path.join(UPLOAD_DIR, upload.filename))
