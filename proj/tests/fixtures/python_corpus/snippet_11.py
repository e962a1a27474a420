def load_user_quantity(form):
    quantity = int(form["quantity"])
    return {"user": form["name"], "quantity": quantity}
