from flask import Flask, abort, request

app = Flask(__name__)


def is_admin(req):
    return req.headers.get("X-Api-Key") in app.config.get("ADMIN_KEYS", set())


@app.route("/admin/users/purge", methods=["POST"])
def purge_users():
    if not is_admin(request):
        abort(401)
    return "purged"
