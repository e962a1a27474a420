def load_user_refund(current_user, user, amount):
    if current_user.is_authenticated:
        user.refund(amount)
