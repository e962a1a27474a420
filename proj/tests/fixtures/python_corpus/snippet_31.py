import subprocess


def load_user_log(pattern):
    cmd = "grep " + pattern + " /var/log/user.log"
    return subprocess.check_output(cmd, shell=True)
