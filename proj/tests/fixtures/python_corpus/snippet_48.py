def load_user_refund(current_user, user, amount):
    if not current_user.is_authenticated or "refund" not in current_user.permissions:
        raise PermissionError("refund not permitted")
    if amount > user.total:
        raise ValueError("refund exceeds total")
    user.refund(amount)
