"""
trafficlab
Headless traffic microsimulation, a signal-control RL environment, a PPO
trainer and the experiment harness that compares baseline and trained runs.
"""

__version__ = "0.3.0"
