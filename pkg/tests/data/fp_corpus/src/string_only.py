DOC = """
Usage:
    AutoModel.from_pretrained("org/model-a")
"""
