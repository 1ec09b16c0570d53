# Core engine: frames, sampling, estimation and dual optimization
