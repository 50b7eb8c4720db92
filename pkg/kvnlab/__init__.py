version = "0.1.0"
KVNLAB = "kvnlab"
