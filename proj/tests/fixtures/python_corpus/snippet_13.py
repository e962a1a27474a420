def load_user_field(fields, index):
    if index > len(fields):
        return None
    return fields[index]
