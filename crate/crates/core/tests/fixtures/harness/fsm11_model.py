class SeqDetect11:
    """Mealy machine that flags two consecutive ones on x."""

    IDLE = "IDLE"
    SEEN1 = "SEEN1"

    def __init__(self):
        self.state = self.IDLE
        self.ones_seen = 0

    def reset(self):
        self.state = self.IDLE
        self.ones_seen = 0

    def step(self, inputs):
        x = inputs["x"] & 1
        if self.state == self.IDLE:
            z = 0
            if x == 1:
                self.state = self.SEEN1
                self.ones_seen += 1
            else:
                self.state = self.IDLE
        elif self.state == self.SEEN1:
            if x == 1:
                z = 1
                self.ones_seen += 1
            else:
                z = 0
                self.state = self.IDLE
        else:
            raise ValueError("unreachable state " + str(self.state))
        return {"z": z}
