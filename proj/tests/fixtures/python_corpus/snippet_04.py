from flask import Flask, request
from markupsafe import escape

app = Flask(__name__)


@app.route("/user")
def load_user():
    name = request.args.get("name", "")
    return "<h1>User: " + str(escape(name)) + "</h1>"
