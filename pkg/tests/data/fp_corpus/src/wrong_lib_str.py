import json

config = json.load("config.json")
