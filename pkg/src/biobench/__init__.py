"""Bird-call enhancement and generative-audio evaluation toolkit."""

__version__ = "0.1.0"
