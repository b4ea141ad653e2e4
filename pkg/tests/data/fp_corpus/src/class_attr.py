from transformers import AutoModel


class Tagger:
    MODEL = "org/model-b"

    def build(self):
        return AutoModel.from_pretrained(self.MODEL)
