"""Self-assessment platform for the capability of the usability process.

Sub-modules:

* ``model`` -- process reference model / assessment model data and loader
* ``scoring`` -- rating scale, achievement percentages, process profiles
* ``stats`` -- kappa, intraclass correlation, Cronbach's alpha, reports
* ``session`` -- the four-phase assessment meeting as an event-sourced
  state machine with the card-based consensus protocol
* ``report`` -- assessment results and markdown/HTML/JSON rendering
* ``store`` -- file-based persistence of sessions and results
* ``service`` -- HTTP API and per-session live event stream
* ``cli`` -- command-line driver
"""

__version__ = "0.1.0"
