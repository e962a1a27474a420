from flask import Flask, request

app = Flask(__name__)


@app.route("/user")
def load_user():
    name = request.args.get("name", "")
    return "<h1>User: " + name + "</h1>"
