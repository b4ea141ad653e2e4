import spacy
from transformers import AutoModel

nlp = spacy.load("en_core_web_sm")
enc = AutoModel.from_pretrained("org/model-e")
