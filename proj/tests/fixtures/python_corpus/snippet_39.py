from flask import Flask

app = Flask(__name__)


@app.route("/admin/users/purge", methods=["POST"])
def purge_users():
    return "purged"
