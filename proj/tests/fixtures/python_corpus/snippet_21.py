def load_user(db, current_user, name):
    return db.users.get(name)
