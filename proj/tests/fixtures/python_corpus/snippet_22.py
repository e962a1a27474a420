def load_user(db, current_user, name):
    record = db.users.get(name)
    if record is None or record.owner_id != current_user.id:
        raise PermissionError("not allowed")
    return record
