import os
import uuid

UPLOAD_DIR = "/var/www/users"
ALLOWED = {".png", ".jpg", ".pdf"}


def save_user_upload(upload):
    ext = os.path.splitext(upload.filename)[1].lower()
    if ext not in ALLOWED:
        raise ValueError("file type not allowed")
    upload.save(os.path.join(UPLOAD_DIR, uuid.uuid4().hex + ext))
