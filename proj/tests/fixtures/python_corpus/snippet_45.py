def load_user_formula(expression, values):
    return eval(expression, {}, values)
