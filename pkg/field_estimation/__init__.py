# Field estimation package initialization
