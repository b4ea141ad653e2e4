from transformers import AutoModel

name = "org/model-a"
name = "org/model-b"
model = AutoModel.from_pretrained(name)
