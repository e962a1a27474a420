ASSIGNABLE = {"viewer", "editor"}


def update_user_role(db, current_user, name, role):
    if current_user.role != "admin" or role not in ASSIGNABLE:
        raise PermissionError("cannot assign role")
    db.users.update(name, {"role": role})
