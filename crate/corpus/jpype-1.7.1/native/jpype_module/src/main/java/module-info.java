/*****************************************************************************
  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.

  See NOTICE file for details.
**************************************************************************** */


module jpype {
  requires java.xml;
  requires java.sql;
  requires java.management;
  
  exports org.jpype;
  exports org.jpype.html;
  exports org.jpype.javadoc;
  exports org.jpype.manager;
  exports org.jpype.pickle;
  exports org.jpype.pkg;
  exports org.jpype.proxy;
  exports org.jpype.ref;
}
