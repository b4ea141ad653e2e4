import spacy

PIPELINE = "da_core_news_sm"
nlp = spacy.load(PIPELINE)
